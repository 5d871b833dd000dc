fn main() {
    std::process::exit(levelchain_cli::cli_main(std::env::args_os()));
}
