use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match clusterplot_cli::app::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            // Usage mistakes are configuration errors; help and version are not.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match clusterplot_cli::app::dispatch(&matches) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("clusterplot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
