use clap::Parser;

fn main() {
    let cli = match auctionlab_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = auctionlab_cli::run(cli) {
        e.report();
        std::process::exit(e.exit_code());
    }
}
