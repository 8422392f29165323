fn main() -> std::process::ExitCode {
    attnflow::cli::main()
}
