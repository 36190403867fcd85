fn main() -> std::process::ExitCode {
    footstep::cli::main()
}
