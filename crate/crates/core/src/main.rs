fn main() {
    std::process::exit(gradsat::toolkit::cli_main(std::env::args_os()));
}
