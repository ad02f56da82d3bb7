fn main() {
    std::process::exit(extcalib::cli::run(std::env::args_os()));
}
