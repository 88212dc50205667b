fn main() {
    std::process::exit(evidence_sdd::cli::dispatch(std::env::args_os()));
}
