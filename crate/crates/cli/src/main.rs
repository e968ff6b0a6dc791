fn main() {
    std::process::exit(nrm_cli::cli_main(std::env::args_os()));
}
