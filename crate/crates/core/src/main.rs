fn main() {
    std::process::exit(caption_arena::cli::main());
}
