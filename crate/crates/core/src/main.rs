fn main() {
    std::process::exit(wfs::cli::run(std::env::args_os()));
}
