fn main() {
    std::process::exit(kfpca::cli::run(std::env::args_os()));
}
