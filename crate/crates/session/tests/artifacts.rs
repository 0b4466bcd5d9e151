use freedrag_core::instruction::{BlobBackendParams, ConfigOverrides, PointPair};
use freedrag_core::{BackendSpec, FeatureMap, Instruction};
use freedrag_eval::metrics::MetricReport;
use freedrag_eval::run_instruction;
use freedrag_session::artifacts::{
    gray_levels, read_trace_csv, render_png, trace_rows, write_render, write_report_csv,
    write_trace_csv, RenderScale, ReportRow,
};

fn decode(png_bytes: &[u8]) -> (u32, u32, Vec<u8>) {
    let mut reader = png::Decoder::new(std::io::Cursor::new(png_bytes))
        .read_info()
        .unwrap();
    let mut buf = vec![0; reader.output_buffer_size().unwrap()];
    let info = reader.next_frame(&mut buf).unwrap();
    buf.truncate(info.buffer_size());
    (info.width, info.height, buf)
}

#[test]
fn gray_levels_span_the_byte_range() {
    let f = FeatureMap::from_fn(3, 4, 2, |y, x, c| (y * 4 + x) as f64 + c as f64);
    let (px, scale) = gray_levels(&f);
    assert_eq!(px.len(), 12);
    assert_eq!((px[0], px[11]), (0, 255));
    // Channel means run 0.5..11.5 in unit steps.
    assert_eq!((scale.min, scale.max), (0.5, 11.5));
    assert_eq!(px[1], (255.0f64 / 11.0).round() as u8);
}

#[test]
fn flat_field_renders_black() {
    let (px, scale) = gray_levels(&FeatureMap::from_fn(2, 2, 1, |_, _, _| 3.0));
    assert!(px.iter().all(|v| *v == 0));
    assert_eq!((scale.min, scale.max), (3.0, 3.0));
}

#[test]
fn png_decodes_to_the_gray_levels() {
    let f = FeatureMap::from_fn(5, 7, 3, |y, x, c| ((x * 3 + y * 5 + c) % 11) as f64 * 0.1);
    let (png_bytes, scale) = render_png(&f).unwrap();
    let (w, h, pixels) = decode(&png_bytes);
    assert_eq!((w as usize, h as usize), (scale.width, scale.height));
    assert_eq!(pixels, gray_levels(&f).0);
}

#[test]
fn render_writes_png_and_scale_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let f = FeatureMap::from_fn(4, 6, 2, |y, x, _| (x + y) as f64);
    let path = write_render(dir.path(), "frame", &f).unwrap();
    let (w, h, _) = decode(&std::fs::read(path).unwrap());
    assert_eq!((w, h), (6, 4));
    let scale: RenderScale =
        serde_json::from_slice(&std::fs::read(dir.path().join("frame.json")).unwrap()).unwrap();
    assert_eq!(scale, gray_levels(&f).1);
}

#[test]
fn trace_csv_round_trips() {
    let inst = Instruction::new(
        BackendSpec::Blob {
            params: BlobBackendParams::default(),
            seed: 2,
        },
        vec![PointPair {
            handle: [20.0, 20.0],
            target: [34.0, 26.0],
        }],
    );
    let out = run_instruction::<f64>(
        &inst,
        inst.backend.initial_latent().unwrap(),
        &ConfigOverrides::default(),
    )
    .unwrap();
    let rows = trace_rows(&out.trace);
    assert!(!rows.is_empty());
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("k,point_index,hx,hy,L_in,L_en,lambda,case,loss,substeps\n"));
    assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), rows);
}

#[test]
fn empty_trace_still_has_a_header() {
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &[]).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 1);
    assert!(read_trace_csv(buf.as_slice()).unwrap().is_empty());
}

#[test]
fn report_csv_has_one_row_per_entry() {
    let report = MetricReport {
        index: 0,
        method: freedrag_core::Method::FreeDrag,
        kernel: "k".into(),
        ccsd: Some(0.25),
        mean_distance: None,
        steps_used: 12,
        forward_status: Some(freedrag_core::RunStatus::Converged),
        reverse_status: None,
        freeze_count: 1,
        fallback_count: 0,
        advance_count: 4,
        record_count: 5,
        mean_move: Some(1.5),
        wall_time: 0.0,
        error: None,
    };
    let mut buf = Vec::new();
    write_report_csv(
        &mut buf,
        &[report.clone(), MetricReport { index: 1, ..report }],
    )
    .unwrap();
    let rows: Vec<ReportRow> = csv::Reader::from_reader(buf.as_slice())
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].index, 1);
    assert_eq!(rows[0].forward_status.as_deref(), Some("converged"));
    assert_eq!(rows[0].mean_distance, None);
}
