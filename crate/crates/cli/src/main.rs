use clap::Parser;

fn main() {
    let args = match masskit_cli::Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            // usage errors are configuration errors; help and version exit 0
            let code = if e.use_stderr() { masskit_cli::EXIT_CONFIG } else { masskit_cli::EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(masskit_cli::run(&args));
}
