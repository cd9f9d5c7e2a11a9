fn main() -> std::process::ExitCode {
    proxops::cli::main_with(std::env::args_os())
}
