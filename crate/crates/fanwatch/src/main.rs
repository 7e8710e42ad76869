fn main() -> std::process::ExitCode {
    fanwatch::cli::main()
}
