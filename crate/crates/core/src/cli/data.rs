use std::fs::File;
use std::io::{BufReader, Write};

use crate::store::Store;

use super::{missing, output_sink, pick, runtime, CliError, ExportArgs, FileConfig, ImportArgs};

pub(super) fn run_import(args: ImportArgs, file: &FileConfig) -> Result<(), CliError> {
    let db = pick(&args.db, &file.db).ok_or_else(|| missing("import", "db"))?;
    let input = pick(&args.input, &file.input).ok_or_else(|| missing("import", "input"))?;
    let reader = File::open(&input).map_err(|e| runtime(format!("cannot open {}: {e}", input.display())))?;
    let store = Store::open(&db).map_err(runtime)?;
    let outcome = store.import_csv(BufReader::new(reader)).map_err(runtime)?;
    println!("imported: written={} skipped={}", outcome.written, outcome.skipped);
    Ok(())
}

pub(super) fn run_export(args: ExportArgs, file: &FileConfig) -> Result<(), CliError> {
    let db = pick(&args.db, &file.db).ok_or_else(|| missing("export", "db"))?;
    let store = Store::open_existing(&db).map_err(runtime)?;
    let mut out = output_sink(pick(&args.output, &file.output).as_deref())?;
    store.export_csv(&mut out).map_err(runtime)?;
    out.flush().map_err(runtime)?;
    Ok(())
}
