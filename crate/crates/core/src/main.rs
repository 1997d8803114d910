fn main() {
    std::process::exit(hprn_core::cli::run(std::env::args_os()));
}
