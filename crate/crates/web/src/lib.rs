//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each binding is a thin wrapper over a plain function in [`ops`] that
//! takes and returns strings, so the logic is testable without a browser.

use wasm_bindgen::prelude::*;

pub mod ops;

/// Splits English words into syllables with the bundled dictionary sample.
#[wasm_bindgen]
pub fn syllabify(text: &str) -> Result<String, JsError> {
    ops::syllabify(text).map_err(|e| JsError::new(&e))
}

/// Reads Japanese text as kana and splits it into moras.
#[wasm_bindgen]
pub fn moras(text: &str) -> Result<String, JsError> {
    ops::moras(text).map_err(|e| JsError::new(&e))
}

/// Picks the candidate whose mora count best fits `target` notes.
#[wasm_bindgen]
pub fn fit(candidates: &str, target: usize) -> Result<String, JsError> {
    ops::fit(candidates, target).map_err(|e| JsError::new(&e))
}
