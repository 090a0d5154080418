fn main() {
    std::process::exit(gccvit::cli::run(std::env::args_os()));
}
