fn main() -> std::process::ExitCode {
    cgedit::cli::main()
}
