use clap::Parser;

fn main() {
    let cli = incrbp::cli::Cli::parse();
    let status = match incrbp::cli::run_command(cli) {
        Ok(status) => status,
        Err(error) => {
            eprintln!("error: {error}");
            incrbp::cli::exit_status_for(&error)
        }
    };
    std::process::exit(status);
}
