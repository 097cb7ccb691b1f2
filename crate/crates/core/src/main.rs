fn main() {
    std::process::exit(boussinesq_channel::cli::cli_main(std::env::args_os()));
}
