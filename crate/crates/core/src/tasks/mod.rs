//! Symbol images, task definitions, example generation and schedules.

mod glyph;
mod idx;
mod schedule;
mod source;
mod task;

pub use glyph::{ascii, render_glyph, render_glyph_styled, GlyphStyle};
pub use idx::{load_idx, parse_idx, IdxData, IMAGES_MAGIC, LABELS_MAGIC};
pub use schedule::{Phase, Schedule};
pub use source::{SourceKind, Split, SymbolSource};
pub use task::{
    eval_left_to_right, gen_example, ground_truth, Example, ExampleStream, Scenario, SymbolRef, TaskId, Variant,
};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
/// Digits 0-9 followed by the four operators.
pub const NUM_SYMBOLS: usize = 14;
/// Class of the first operator.
pub const OPERATOR_BASE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Digit(usize),
    Operator(usize),
}

/// # Panics
/// If `class` is not a symbol class.
pub fn symbol_kind(class: usize) -> SymbolKind {
    match class {
        0..=9 => SymbolKind::Digit(class),
        10..=13 => SymbolKind::Operator(class - OPERATOR_BASE),
        _ => panic!("symbol class {class} out of range"),
    }
}

/// Printable form of a symbol class.
pub fn symbol_char(class: usize) -> char {
    match symbol_kind(class) {
        SymbolKind::Digit(d) => char::from_digit(d as u32, 10).expect("digit"),
        SymbolKind::Operator(o) => crate::arith::OPERATORS[o],
    }
}
