fn main() {
    std::process::exit(rwre_cli::run(std::env::args_os()));
}
