fn main() {
    std::process::exit(zeno_cascade::cli::run(std::env::args_os()));
}
