fn main() {
    std::process::exit(psd_extract_cli::run(std::env::args_os()));
}
