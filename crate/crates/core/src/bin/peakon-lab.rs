fn main() {
    std::process::exit(peakon_lab::cli::run_from_env());
}
