use spamm::bench::{
    generate, run_scenario, write_ratios, write_reports, GeneratorKind, GeneratorSpec, RatioRow,
    RunOptions, Scenario, Workload, CSV_HEADER, RATIO_HEADER,
};

const HEADER: &str = include_str!("golden/header.csv");
const RATIOS: &str = include_str!("golden/ratios_header.csv");

fn lines(buf: Vec<u8>) -> Vec<String> {
    String::from_utf8(buf)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn header_constants_match_golden() {
    assert_eq!(HEADER.trim_end(), CSV_HEADER);
    assert_eq!(RATIOS.trim_end(), RATIO_HEADER);
}

#[test]
fn empty_report_is_header_only() {
    let mut buf = Vec::new();
    write_reports(&mut buf, &[]).unwrap();
    assert_eq!(lines(buf), vec![CSV_HEADER.to_string()]);
    let mut buf = Vec::new();
    write_ratios(&mut buf, &[]).unwrap();
    assert_eq!(lines(buf), vec![RATIO_HEADER.to_string()]);
}

#[test]
fn every_scenario_row_has_header_shape() {
    let a = generate(&GeneratorSpec::new(GeneratorKind::BlockedDecay, 64).seed(3)).unwrap();
    let w = Workload::new(a, 1.0, 0.0).unwrap();
    let opts = RunOptions {
        repeats: 1,
        ..Default::default()
    };
    let rows: Vec<_> = Scenario::ALL
        .iter()
        .map(|&s| run_scenario(&w, s, 1e-8, &opts).unwrap())
        .collect();
    let mut buf = Vec::new();
    write_reports(&mut buf, &rows).unwrap();
    let out = lines(buf);
    assert_eq!(out[0], CSV_HEADER);
    assert_eq!(out.len(), Scenario::ALL.len() + 1);
    let width = CSV_HEADER.split(',').count();
    let expect = [
        ("spamm4", "fine4"),
        ("spamm16", "coarse16"),
        ("spamm-dense-leaf", "dense-leaf"),
        ("dense-single", "none"),
        ("dense-double", "none"),
    ];
    for (line, (scen, gran)) in out[1..].iter().zip(expect) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), width, "{line}");
        assert_eq!(f[0], scen);
        assert_eq!(f[1], "64");
        assert_eq!(f[3], gran);
        assert!(f[5].parse::<u64>().is_ok());
        assert!(f[9].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn ratio_rows_serialize_in_header_order() {
    let mut buf = Vec::new();
    let rows = [RatioRow {
        n: 128,
        tau: 1e-6,
        c16_over_c4: 2.5,
        t16_over_t4: 1.5,
    }];
    write_ratios(&mut buf, &rows).unwrap();
    assert_eq!(
        lines(buf),
        vec![RATIO_HEADER.to_string(), "128,1e-6,2.5,1.5".to_string()]
    );
}
