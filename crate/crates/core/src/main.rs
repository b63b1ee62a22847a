use clap::Parser;

fn main() {
    let cli = hexqg::cli::Cli::parse();
    hexqg::cli::init_logging(cli.verbose);
    std::process::exit(hexqg::cli::run(cli));
}
