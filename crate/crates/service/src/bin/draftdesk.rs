fn main() -> std::process::ExitCode {
    draftdesk_service::cli::main()
}
