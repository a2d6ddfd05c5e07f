fn main() {
    std::process::exit(timefork::cli::dispatch(std::env::args_os()));
}
