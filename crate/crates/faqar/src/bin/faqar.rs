fn main() {
    std::process::exit(faqar::cli::run());
}
