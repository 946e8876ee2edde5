fn main() -> std::process::ExitCode {
    lads::cli::main()
}
