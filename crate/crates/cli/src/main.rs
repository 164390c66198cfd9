fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIACHRON_LOG", "warn")).init();
    std::process::exit(diachron::main_with_args(std::env::args_os()));
}
