fn main() {
    std::process::exit(scmpp::cli::run(std::env::args_os()));
}
