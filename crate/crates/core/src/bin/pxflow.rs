fn main() -> std::process::ExitCode {
    pxflow::cli::main_with_args(std::env::args_os())
}
