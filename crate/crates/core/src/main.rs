fn main() {
    std::process::exit(causal_frames::cli::cli_main(std::env::args_os()));
}
