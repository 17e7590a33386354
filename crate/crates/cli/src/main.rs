fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(projclt_cli::run(&args));
}
