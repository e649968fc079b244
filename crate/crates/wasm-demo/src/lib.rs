//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(e: String) -> JsError {
    JsError::new(&e)
}

/// Flat `[ax, ay, az, ...]` segment: the window plus shift margin each side.
#[wasm_bindgen]
pub fn synthesize(class: &str, seed: u32, amplitude: f64, noise: f64) -> Result<Vec<f64>, JsError> {
    demo::synthesize(class, u64::from(seed), amplitude, noise).map_err(js)
}

#[wasm_bindgen]
pub fn augment(segment: &[f64], op: &str, value: f64) -> Result<Vec<f64>, JsError> {
    demo::augment(segment, op, value).map_err(js)
}

#[wasm_bindgen]
pub struct Demo(demo::Demo);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Demo, JsError> {
        demo::Demo::train(u64::from(seed)).map(Demo).map_err(js)
    }

    #[wasm_bindgen(getter, js_name = testAccuracy)]
    pub fn test_accuracy(&self) -> f64 {
        self.0.test_accuracy
    }

    /// JSON `{class, score, features: [[name, value], ...]}`.
    pub fn classify(&self, window: &[f64]) -> Result<String, JsError> {
        let c = self.0.classify(window).map_err(js)?;
        serde_json::to_string(&c).map_err(|e| js(e.to_string()))
    }
}
