//! Binary entry point; all logic lives in the library's `cli` module.

fn main() {
    std::process::exit(seqdesign::cli::main_entry());
}
