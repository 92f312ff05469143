fn main() {
    std::process::exit(tetdeform_cli::cli_main(std::env::args_os()));
}
