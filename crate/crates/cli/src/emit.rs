use crate::config::Format;
use crate::run::{Report, Table};

/// Serializes the report; JSON is pretty-printed with a trailing newline.
pub fn emit(report: &Report, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => table_csv(&report.table),
    }
}

pub fn table_csv(t: &Table) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(&t.header).expect("in-memory write");
    for row in &t.rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table { header: vec!["m", "value"], rows: vec![] };
        assert_eq!(table_csv(&t), b"m,value\n");
    }

    #[test]
    fn quoting() {
        let t = Table { header: vec!["graph"], rows: vec![vec!["[1:(2,L)]".into()]] };
        assert_eq!(table_csv(&t), b"graph\n\"[1:(2,L)]\"\n");
    }
}
