fn main() -> std::process::ExitCode {
    pilotwave::cli::main()
}
