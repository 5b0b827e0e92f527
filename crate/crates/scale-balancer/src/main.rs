fn main() {
    env_logger::init();
    let code = scale_balancer::cli::run(std::env::args_os());
    std::process::exit(code);
}
