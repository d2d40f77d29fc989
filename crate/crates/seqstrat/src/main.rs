fn main() {
    std::process::exit(seqstrat::cli::run(std::env::args_os().collect()));
}
