fn main() {
    std::process::exit(quasidet::cli::run(std::env::args_os()));
}
