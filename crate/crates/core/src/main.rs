fn main() {
    std::process::exit(soundmix::cli::run(std::env::args_os()));
}
