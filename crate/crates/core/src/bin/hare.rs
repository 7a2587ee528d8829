fn main() -> std::process::ExitCode {
    hare::cli::main()
}
