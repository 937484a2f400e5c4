fn main() {
    std::process::exit(rdsim_cli::run(std::env::args_os()));
}
