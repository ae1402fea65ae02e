fn main() -> std::process::ExitCode {
    aqem::cli::main()
}
