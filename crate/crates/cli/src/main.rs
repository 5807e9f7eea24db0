fn main() {
    let argv: Vec<String> = std::env::args().collect();
    std::process::exit(cps_cli::run(&argv));
}
