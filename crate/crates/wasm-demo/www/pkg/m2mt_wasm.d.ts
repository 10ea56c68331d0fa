/* tslint:disable */
/* eslint-disable */

export class Frame {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly di: number;
    readonly gini: number;
    readonly height: number;
    readonly reach: number;
    /**
     * Row-major RGBA, ready for `ImageData`.
     */
    readonly rgba: Uint8Array;
    readonly width: number;
}

export function attribution(family: string, x: number, y: number, l: number, steps: number, seed: number): Frame;

export function lowResSide(): number;

export function perturbation(family: string, x: number, y: number, seed: number): Frame;

export function renderView(view: string, disparity: number, seed: number): Frame;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_frame_free: (a: number, b: number) => void;
    readonly attribution: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly frame_di: (a: number) => number;
    readonly frame_gini: (a: number) => number;
    readonly frame_height: (a: number) => number;
    readonly frame_reach: (a: number) => number;
    readonly frame_rgba: (a: number) => [number, number];
    readonly frame_width: (a: number) => number;
    readonly lowResSide: () => number;
    readonly perturbation: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly renderView: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
