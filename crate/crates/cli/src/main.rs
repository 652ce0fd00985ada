use clap::Parser;

fn main() {
    let cli = match stasmc_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { stasmc_cli::EXIT_IO } else { 0 });
        }
    };
    std::process::exit(stasmc_cli::run(cli));
}
