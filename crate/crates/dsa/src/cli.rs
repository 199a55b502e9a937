//! Batch pipeline commands behind the `dsa` binary.

pub fn run() -> i32 {
    0
}
