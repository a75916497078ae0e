fn main() {
    std::process::exit(qmelab::run_cli(std::env::args_os()));
}
