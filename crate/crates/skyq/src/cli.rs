//! Command-line front end (placeholder during bring-up).

pub fn run() -> i32 {
    eprintln!("skyq: not yet wired");
    2
}
