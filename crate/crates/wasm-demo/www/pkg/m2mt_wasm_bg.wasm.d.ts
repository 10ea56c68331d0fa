/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_frame_free: (a: number, b: number) => void;
export const attribution: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const frame_di: (a: number) => number;
export const frame_gini: (a: number) => number;
export const frame_height: (a: number) => number;
export const frame_reach: (a: number) => number;
export const frame_rgba: (a: number) => [number, number];
export const frame_width: (a: number) => number;
export const lowResSide: () => number;
export const perturbation: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const renderView: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
