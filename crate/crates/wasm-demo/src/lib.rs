//! WebAssembly bindings for the browser demo. The logic lives in [`demo`];
//! this layer only converts arguments and errors.

pub mod demo;

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Frame(demo::Image);

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.0.width as u32
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.0.height as u32
    }

    /// Row-major RGBA, ready for `ImageData`.
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.0.rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn di(&self) -> f64 {
        self.0.di
    }

    #[wasm_bindgen(getter)]
    pub fn gini(&self) -> f64 {
        self.0.gini
    }

    #[wasm_bindgen(getter)]
    pub fn reach(&self) -> f64 {
        self.0.reach
    }
}

fn js(e: m2mt::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = renderView)]
pub fn render_view(view: &str, disparity: f64, seed: u32) -> Result<Frame, JsError> {
    let v = demo::View::parse(view).map_err(js)?;
    demo::render_view(v, disparity, seed as u64).map(Frame).map_err(js)
}

#[wasm_bindgen]
pub fn perturbation(family: &str, x: u32, y: u32, seed: u32) -> Result<Frame, JsError> {
    let f = demo::Family::parse(family).map_err(js)?;
    demo::perturbation(f, x as usize, y as usize, seed as u64).map(Frame).map_err(js)
}

#[wasm_bindgen]
pub fn attribution(family: &str, x: u32, y: u32, l: u32, steps: u32, seed: u32) -> Result<Frame, JsError> {
    let f = demo::Family::parse(family).map_err(js)?;
    demo::attribution(f, x as usize, y as usize, l as usize, steps as usize, seed as u64).map(Frame).map_err(js)
}

#[wasm_bindgen(js_name = lowResSide)]
pub fn low_res_side() -> u32 {
    demo::SIDE as u32
}
