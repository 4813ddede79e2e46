fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(weftsched::cli::run(&argv));
}
