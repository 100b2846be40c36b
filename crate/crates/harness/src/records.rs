use std::io::{Read, Write};
use std::path::Path;

use crate::experiment::RunRecord;
use crate::Result;

pub const COLUMNS: [&str; 8] = [
    "configuration",
    "site_split",
    "fold",
    "client",
    "c_index",
    "n_test",
    "n_comparable_pairs",
    "seed",
];

pub fn write_records<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_string(records: &[RunRecord]) -> String {
    let mut buf = Vec::new();
    write_records(records, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("csv output is utf-8")
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(crate::HarnessError::Records(format!("unexpected header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}

pub fn read_records_path(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    read_records(std::fs::File::open(path)?)
}
