fn main() -> std::process::ExitCode {
    bufferloop::cli::main_exit()
}
