fn main() {
    std::process::exit(entrolimit::cli::main(std::env::args().skip(1).collect()));
}
