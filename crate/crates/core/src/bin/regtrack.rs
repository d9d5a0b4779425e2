fn main() {
    std::process::exit(regtrack::pipeline::run_cli(std::env::args_os()));
}
