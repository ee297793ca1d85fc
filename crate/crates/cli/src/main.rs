fn main() {
    std::process::exit(bora_cli::cli_main(std::env::args_os()));
}
