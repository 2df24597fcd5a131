fn main() {
    std::process::exit(causal_pieces_cli::run(std::env::args_os()));
}
