fn main() {
    std::process::exit(bridge_glmm::cli::cli_dispatch(std::env::args_os()));
}
