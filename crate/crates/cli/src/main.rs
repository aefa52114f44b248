fn main() -> std::process::ExitCode {
    autoneb_cli::main_with_args(std::env::args_os())
}
