fn main() {
    let code = vectorforge::cli::run(std::env::args_os().collect());
    std::process::exit(code);
}
