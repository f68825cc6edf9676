//! Layer-exact descriptors of the corpus architectures.
//!
//! Only parameterized layers are listed (convolution, linear, batch norm and
//! the SSD L2 normalization scale). Activations and pooling carry no weights
//! and would only inflate match counts. Byte sizes are fp32.

use std::collections::BTreeMap;

use gemel_core::catalog::{Bytes, Catalog, LayerDescriptor, LayerType, ModelDescriptor, ParamValue, RunPoint};

const F32: Bytes = 4;
const GB: f64 = 1e9;
/// Host-to-device rate used for models without a measured load time.
const LOAD_BYTES_PER_MS: f64 = 5.0e6;

#[derive(Default)]
struct Net {
    layers: Vec<LayerDescriptor>,
}

fn tuple(v: (i64, i64)) -> ParamValue {
    ParamValue::Tuple(vec![v.0, v.1])
}

impl Net {
    fn push(&mut self, layer_type: LayerType, params: BTreeMap<String, ParamValue>, count: i64) {
        let position = self.layers.len();
        self.layers.push(LayerDescriptor {
            layer_type,
            params,
            param_bytes: count as Bytes * F32,
            position,
        });
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_full(
        &mut self,
        cin: i64,
        cout: i64,
        kernel: (i64, i64),
        stride: i64,
        padding: (i64, i64),
        dilation: i64,
        groups: i64,
        bias: bool,
    ) {
        let mut p = BTreeMap::new();
        p.insert("in_channels".into(), ParamValue::Int(cin));
        p.insert("out_channels".into(), ParamValue::Int(cout));
        p.insert("kernel_size".into(), tuple(kernel));
        p.insert("stride".into(), tuple((stride, stride)));
        p.insert("padding".into(), tuple(padding));
        p.insert("dilation".into(), tuple((dilation, dilation)));
        p.insert("groups".into(), ParamValue::Int(groups));
        p.insert("bias".into(), ParamValue::Bool(bias));
        let count = cout * (cin / groups) * kernel.0 * kernel.1 + if bias { cout } else { 0 };
        self.push(LayerType::Convolutional, p, count);
    }

    /// Square kernel, unit dilation, one group.
    fn conv(&mut self, cin: i64, cout: i64, k: i64, stride: i64, pad: i64, bias: bool) {
        self.conv_full(cin, cout, (k, k), stride, (pad, pad), 1, 1, bias);
    }

    fn bn(&mut self, n: i64, eps: f64, momentum: f64) {
        let mut p = BTreeMap::new();
        p.insert("num_features".into(), ParamValue::Int(n));
        p.insert("eps".into(), ParamValue::Float(eps));
        p.insert("momentum".into(), ParamValue::Float(momentum));
        p.insert("affine".into(), ParamValue::Bool(true));
        self.push(LayerType::BatchNorm, p, 2 * n);
    }

    fn fc(&mut self, fin: i64, fout: i64) {
        let mut p = BTreeMap::new();
        p.insert("in_features".into(), ParamValue::Int(fin));
        p.insert("out_features".into(), ParamValue::Int(fout));
        p.insert("bias".into(), ParamValue::Bool(true));
        self.push(LayerType::Linear, p, fin * fout + fout);
    }

    /// Convolution without bias followed by batch norm.
    fn conv_bn(&mut self, cin: i64, cout: i64, k: (i64, i64), stride: i64, pad: (i64, i64), eps: f64, momentum: f64) {
        self.conv_full(cin, cout, k, stride, pad, 1, 1, false);
        self.bn(cout, eps, momentum);
    }
}

// Classification networks.

fn alexnet() -> Net {
    let mut n = Net::default();
    n.conv(3, 64, 11, 4, 2, true);
    n.conv(64, 192, 5, 1, 2, true);
    n.conv(192, 384, 3, 1, 1, true);
    n.conv(384, 256, 3, 1, 1, true);
    n.conv(256, 256, 3, 1, 1, true);
    n.fc(256 * 6 * 6, 4096);
    n.fc(4096, 4096);
    n.fc(4096, 1000);
    n
}

const VGG11: &[i64] = &[64, 0, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0];
const VGG13: &[i64] = &[64, 64, 0, 128, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0];
const VGG16: &[i64] = &[64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512, 0, 512, 512, 512, 0];
const VGG19: &[i64] = &[
    64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512, 0,
];

/// VGG convolutions; 0 marks a pooling step. Returns the final channel count.
fn vgg_features(n: &mut Net, cfg: &[i64]) -> i64 {
    let mut cin = 3;
    for &c in cfg.iter().filter(|&&c| c != 0) {
        n.conv(cin, c, 3, 1, 1, true);
        cin = c;
    }
    cin
}

fn vgg(cfg: &[i64]) -> Net {
    let mut n = Net::default();
    vgg_features(&mut n, cfg);
    n.fc(512 * 7 * 7, 4096);
    n.fc(4096, 4096);
    n.fc(4096, 1000);
    n
}

const BN_EPS: f64 = 1e-5;
const BN_MOMENTUM: f64 = 0.1;

fn bn(n: &mut Net, c: i64) {
    n.bn(c, BN_EPS, BN_MOMENTUM);
}

/// ResNet trunk without the classifier. Returns the output channel count.
fn resnet_trunk(n: &mut Net, blocks: [usize; 4], bottleneck: bool) -> i64 {
    n.conv(3, 64, 7, 2, 3, false);
    bn(n, 64);
    let expansion = if bottleneck { 4 } else { 1 };
    let mut cin = 64;
    for (stage, &count) in blocks.iter().enumerate() {
        let planes = 64 << stage;
        for b in 0..count {
            let stride = if stage > 0 && b == 0 { 2 } else { 1 };
            let out = planes * expansion;
            if bottleneck {
                n.conv(cin, planes, 1, 1, 0, false);
                bn(n, planes);
                n.conv(planes, planes, 3, stride, 1, false);
                bn(n, planes);
                n.conv(planes, out, 1, 1, 0, false);
                bn(n, out);
            } else {
                n.conv(cin, planes, 3, stride, 1, false);
                bn(n, planes);
                n.conv(planes, planes, 3, 1, 1, false);
                bn(n, planes);
            }
            if stride != 1 || cin != out {
                n.conv(cin, out, 1, stride, 0, false);
                bn(n, out);
            }
            cin = out;
        }
    }
    cin
}

fn resnet(blocks: [usize; 4], bottleneck: bool) -> Net {
    let mut n = Net::default();
    let c = resnet_trunk(&mut n, blocks, bottleneck);
    n.fc(c, 1000);
    n
}

fn densenet121() -> Net {
    let mut n = Net::default();
    n.conv(3, 64, 7, 2, 3, false);
    bn(&mut n, 64);
    let mut c = 64;
    let blocks = [6, 12, 24, 16];
    for (i, &layers) in blocks.iter().enumerate() {
        for _ in 0..layers {
            bn(&mut n, c);
            n.conv(c, 128, 1, 1, 0, false);
            bn(&mut n, 128);
            n.conv(128, 32, 3, 1, 1, false);
            c += 32;
        }
        if i + 1 < blocks.len() {
            bn(&mut n, c);
            n.conv(c, c / 2, 1, 1, 0, false);
            c /= 2;
        }
    }
    bn(&mut n, c);
    n.fc(c, 1000);
    n
}

fn squeezenet() -> Net {
    let mut n = Net::default();
    n.conv(3, 96, 7, 2, 0, true);
    let fires = [
        (96, 16, 64),
        (128, 16, 64),
        (128, 32, 128),
        (256, 32, 128),
        (256, 48, 192),
        (384, 48, 192),
        (384, 64, 256),
        (512, 64, 256),
    ];
    for (cin, squeeze, expand) in fires {
        n.conv(cin, squeeze, 1, 1, 0, true);
        n.conv(squeeze, expand, 1, 1, 0, true);
        n.conv(squeeze, expand, 3, 1, 1, true);
    }
    n.conv(512, 1000, 1, 1, 0, true);
    n
}

/// MobileNetV2 feature extractor through the 1280-channel projection.
fn mobilenet_v2_features(n: &mut Net) {
    n.conv(3, 32, 3, 2, 1, false);
    bn(n, 32);
    let settings = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)];
    let mut cin = 32;
    for (t, c, reps, s) in settings {
        for r in 0..reps {
            let stride = if r == 0 { s } else { 1 };
            let hidden = cin * t;
            if t != 1 {
                n.conv(cin, hidden, 1, 1, 0, false);
                bn(n, hidden);
            }
            n.conv_full(hidden, hidden, (3, 3), stride, (1, 1), 1, hidden, false);
            bn(n, hidden);
            n.conv(hidden, c, 1, 1, 0, false);
            bn(n, c);
            cin = c;
        }
    }
    n.conv(320, 1280, 1, 1, 0, false);
    bn(n, 1280);
}

fn mobilenet_v2() -> Net {
    let mut n = Net::default();
    mobilenet_v2_features(&mut n);
    n.fc(1280, 1000);
    n
}

const INCEPTION_EPS: f64 = 1e-3;

fn basic(n: &mut Net, cin: i64, cout: i64, k: (i64, i64), stride: i64, pad: (i64, i64)) {
    n.conv_bn(cin, cout, k, stride, pad, INCEPTION_EPS, BN_MOMENTUM);
}

fn basic_sq(n: &mut Net, cin: i64, cout: i64, k: i64, stride: i64, pad: i64) {
    basic(n, cin, cout, (k, k), stride, (pad, pad));
}

fn googlenet() -> Net {
    let mut n = Net::default();
    basic_sq(&mut n, 3, 64, 7, 2, 3);
    basic_sq(&mut n, 64, 64, 1, 1, 0);
    basic_sq(&mut n, 64, 192, 3, 1, 1);
    let modules = [
        (192, 64, 96, 128, 16, 32, 32),
        (256, 128, 128, 192, 32, 96, 64),
        (480, 192, 96, 208, 16, 48, 64),
        (512, 160, 112, 224, 24, 64, 64),
        (512, 128, 128, 256, 24, 64, 64),
        (512, 112, 144, 288, 32, 64, 64),
        (528, 256, 160, 320, 32, 128, 128),
        (832, 256, 160, 320, 32, 128, 128),
        (832, 384, 192, 384, 48, 128, 128),
    ];
    for (cin, b1, r3, b3, r5, b5, proj) in modules {
        basic_sq(&mut n, cin, b1, 1, 1, 0);
        basic_sq(&mut n, cin, r3, 1, 1, 0);
        basic_sq(&mut n, r3, b3, 3, 1, 1);
        basic_sq(&mut n, cin, r5, 1, 1, 0);
        basic_sq(&mut n, r5, b5, 3, 1, 1);
        basic_sq(&mut n, cin, proj, 1, 1, 0);
    }
    n.fc(1024, 1000);
    n
}

fn inception_v3() -> Net {
    let mut n = Net::default();
    let n = &mut n;
    basic_sq(n, 3, 32, 3, 2, 0);
    basic_sq(n, 32, 32, 3, 1, 0);
    basic_sq(n, 32, 64, 3, 1, 1);
    basic_sq(n, 64, 80, 1, 1, 0);
    basic_sq(n, 80, 192, 3, 1, 0);
    for (cin, pool) in [(192, 32), (256, 64), (288, 64)] {
        basic_sq(n, cin, 64, 1, 1, 0);
        basic_sq(n, cin, 48, 1, 1, 0);
        basic_sq(n, 48, 64, 5, 1, 2);
        basic_sq(n, cin, 64, 1, 1, 0);
        basic_sq(n, 64, 96, 3, 1, 1);
        basic_sq(n, 96, 96, 3, 1, 1);
        basic_sq(n, cin, pool, 1, 1, 0);
    }
    basic_sq(n, 288, 384, 3, 2, 0);
    basic_sq(n, 288, 64, 1, 1, 0);
    basic_sq(n, 64, 96, 3, 1, 1);
    basic_sq(n, 96, 96, 3, 2, 0);
    let (row, col) = ((1, 7), (7, 1));
    let (prow, pcol) = ((0, 3), (3, 0));
    for c7 in [128, 160, 160, 192] {
        basic_sq(n, 768, 192, 1, 1, 0);
        basic_sq(n, 768, c7, 1, 1, 0);
        basic(n, c7, c7, row, 1, prow);
        basic(n, c7, 192, col, 1, pcol);
        basic_sq(n, 768, c7, 1, 1, 0);
        basic(n, c7, c7, col, 1, pcol);
        basic(n, c7, c7, row, 1, prow);
        basic(n, c7, c7, col, 1, pcol);
        basic(n, c7, 192, row, 1, prow);
        basic_sq(n, 768, 192, 1, 1, 0);
    }
    basic_sq(n, 768, 192, 1, 1, 0);
    basic_sq(n, 192, 320, 3, 2, 0);
    basic_sq(n, 768, 192, 1, 1, 0);
    basic(n, 192, 192, row, 1, prow);
    basic(n, 192, 192, col, 1, pcol);
    basic_sq(n, 192, 192, 3, 2, 0);
    for cin in [1280, 2048] {
        basic_sq(n, cin, 320, 1, 1, 0);
        basic_sq(n, cin, 384, 1, 1, 0);
        basic(n, 384, 384, (1, 3), 1, (0, 1));
        basic(n, 384, 384, (3, 1), 1, (1, 0));
        basic_sq(n, cin, 448, 1, 1, 0);
        basic_sq(n, 448, 384, 3, 1, 1);
        basic(n, 384, 384, (1, 3), 1, (0, 1));
        basic(n, 384, 384, (3, 1), 1, (1, 0));
        basic_sq(n, cin, 192, 1, 1, 0);
    }
    n.fc(2048, 1000);
    std::mem::take(n)
}

// Detectors.

const VOC_CLASSES: i64 = 21;
const COCO_CLASSES: i64 = 91;

fn ssd_vgg16() -> Net {
    let mut n = Net::default();
    // conv1_1 .. conv4_3, then the L2 normalization scale on conv4_3.
    let mut cin = 3;
    for &c in VGG16.iter().filter(|&&c| c != 0).take(10) {
        n.conv(cin, c, 3, 1, 1, true);
        cin = c;
    }
    let mut p = BTreeMap::new();
    p.insert("channels".into(), ParamValue::Int(512));
    n.push(LayerType::Other("l2norm".into()), p, 512);
    for _ in 0..3 {
        n.conv(512, 512, 3, 1, 1, true);
    }
    n.conv_full(512, 1024, (3, 3), 1, (6, 6), 6, 1, true);
    n.conv(1024, 1024, 1, 1, 0, true);
    for (cin, mid, out, stride, pad) in [(1024, 256, 512, 2, 1), (512, 128, 256, 2, 1), (256, 128, 256, 1, 0), (256, 128, 256, 1, 0)] {
        n.conv(cin, mid, 1, 1, 0, true);
        n.conv(mid, out, 3, stride, pad, true);
    }
    let maps = [(512, 4), (1024, 6), (512, 6), (256, 6), (256, 4), (256, 4)];
    for (c, a) in maps {
        n.conv(c, a * VOC_CLASSES, 3, 1, 1, true);
    }
    for (c, a) in maps {
        n.conv(c, a * 4, 3, 1, 1, true);
    }
    n
}

fn ssdlite_mobilenet_v2() -> Net {
    let mut n = Net::default();
    mobilenet_v2_features(&mut n);
    for (cin, mid, out) in [(1280, 256, 512), (512, 128, 256), (256, 128, 256), (256, 64, 128)] {
        n.conv(cin, mid, 1, 1, 0, false);
        bn(&mut n, mid);
        n.conv_full(mid, mid, (3, 3), 2, (1, 1), 1, mid, false);
        bn(&mut n, mid);
        n.conv(mid, out, 1, 1, 0, false);
        bn(&mut n, out);
    }
    let maps = [576, 1280, 512, 256, 256, 128];
    for outputs in [6 * VOC_CLASSES, 6 * 4] {
        for c in maps {
            n.conv_full(c, c, (3, 3), 1, (1, 1), 1, c, false);
            bn(&mut n, c);
            n.conv(c, outputs, 1, 1, 0, true);
        }
    }
    n
}

const YOLO_MOMENTUM: f64 = 0.01;
const YOLO_OUT: i64 = 3 * (5 + 80);

fn dark(n: &mut Net, cin: i64, cout: i64, k: i64, stride: i64) {
    n.conv_bn(cin, cout, (k, k), stride, (k / 2, k / 2), BN_EPS, YOLO_MOMENTUM);
}

/// Five alternating 1x1/3x3 units, then the 3x3 and the output projection.
fn yolo_head(n: &mut Net, cin: i64, c: i64) {
    dark(n, cin, c, 1, 1);
    dark(n, c, 2 * c, 3, 1);
    dark(n, 2 * c, c, 1, 1);
    dark(n, c, 2 * c, 3, 1);
    dark(n, 2 * c, c, 1, 1);
    dark(n, c, 2 * c, 3, 1);
    n.conv(2 * c, YOLO_OUT, 1, 1, 0, true);
}

fn yolov3() -> Net {
    let mut n = Net::default();
    let n = &mut n;
    dark(n, 3, 32, 3, 1);
    let mut c = 32;
    for reps in [1, 2, 8, 8, 4] {
        dark(n, c, 2 * c, 3, 2);
        c *= 2;
        for _ in 0..reps {
            dark(n, c, c / 2, 1, 1);
            dark(n, c / 2, c, 3, 1);
        }
    }
    yolo_head(n, 1024, 512);
    dark(n, 512, 256, 1, 1);
    yolo_head(n, 256 + 512, 256);
    dark(n, 256, 128, 1, 1);
    yolo_head(n, 128 + 256, 128);
    std::mem::take(n)
}

fn tiny_yolov3() -> Net {
    let mut n = Net::default();
    let n = &mut n;
    let mut c = 3;
    for out in [16, 32, 64, 128, 256, 512, 1024] {
        dark(n, c, out, 3, 1);
        c = out;
    }
    dark(n, 1024, 256, 1, 1);
    dark(n, 256, 512, 3, 1);
    n.conv(512, YOLO_OUT, 1, 1, 0, true);
    dark(n, 256, 128, 1, 1);
    dark(n, 128 + 256, 256, 3, 1);
    n.conv(256, YOLO_OUT, 1, 1, 0, true);
    std::mem::take(n)
}

/// Faster R-CNN on a ResNet trunk: RPN on the last stage, then a two-layer
/// box head over 7x7 pooled regions.
fn faster_rcnn(blocks: [usize; 4]) -> Net {
    let mut n = Net::default();
    let c = resnet_trunk(&mut n, blocks, true);
    let anchors = 15;
    n.conv(c, 512, 3, 1, 1, true);
    n.conv(512, anchors, 1, 1, 0, true);
    n.conv(512, anchors * 4, 1, 1, 0, true);
    n.fc(c * 7 * 7, 1024);
    n.fc(1024, 1024);
    n.fc(1024, COCO_CLASSES);
    n.fc(1024, COCO_CLASSES * 4);
    n
}

/// Memory needed while running, either as a measured total or as activation
/// bytes on top of the parameters.
#[derive(Debug, Clone, Copy)]
enum RunMem {
    Total(f64),
    Delta(f64),
}

pub struct ZooEntry {
    pub model_id: &'static str,
    pub family: &'static str,
    build: fn() -> Net,
    /// Measured full load time; `None` derives it from the byte size.
    load_ms: Option<f64>,
    /// (batch size, run memory in GB, inference ms).
    runs: [(u32, RunMem, f64); 3],
    base_accuracy: f64,
}

use RunMem::{Delta, Total};

fn r18() -> Net {
    resnet([2, 2, 2, 2], false)
}
fn r34() -> Net {
    resnet([3, 4, 6, 3], false)
}
fn r50() -> Net {
    resnet([3, 4, 6, 3], true)
}
fn r101() -> Net {
    resnet([3, 4, 23, 3], true)
}
fn r152() -> Net {
    resnet([3, 8, 36, 3], true)
}
fn vgg11() -> Net {
    vgg(VGG11)
}
fn vgg13() -> Net {
    vgg(VGG13)
}
fn vgg16() -> Net {
    vgg(VGG16)
}
fn vgg19() -> Net {
    vgg(VGG19)
}
fn frcnn_r50() -> Net {
    faster_rcnn([3, 4, 6, 3])
}
fn frcnn_r101() -> Net {
    faster_rcnn([3, 4, 23, 3])
}

pub const ZOO: &[ZooEntry] = &[
    ZooEntry { model_id: "alexnet", family: "alexnet", build: alexnet, load_ms: None,
        runs: [(1, Delta(0.05), 0.9), (2, Delta(0.07), 1.0), (4, Delta(0.10), 1.1)], base_accuracy: 0.80 },
    ZooEntry { model_id: "densenet", family: "densenet", build: densenet121, load_ms: None,
        runs: [(1, Delta(0.15), 12.0), (2, Delta(0.25), 12.5), (4, Delta(0.45), 13.0)], base_accuracy: 0.90 },
    ZooEntry { model_id: "frcnn-r101", family: "faster_rcnn", build: frcnn_r101, load_ms: Some(117.3),
        runs: [(1, Total(3.70), 115.4), (2, Total(6.96), 210.1), (4, Total(12.47), 379.4)], base_accuracy: 0.88 },
    ZooEntry { model_id: "frcnn-r50", family: "faster_rcnn", build: frcnn_r50, load_ms: None,
        runs: [(1, Total(2.55), 95.0), (2, Total(4.67), 172.0), (4, Total(8.25), 310.0)], base_accuracy: 0.86 },
    ZooEntry { model_id: "googlenet", family: "googlenet", build: googlenet, load_ms: None,
        runs: [(1, Delta(0.05), 5.5), (2, Delta(0.08), 5.7), (4, Delta(0.14), 6.0)], base_accuracy: 0.86 },
    ZooEntry { model_id: "inception", family: "inception", build: inception_v3, load_ms: Some(11.8),
        runs: [(1, Total(0.19), 9.1), (2, Total(0.23), 9.1), (4, Total(0.34), 9.1)], base_accuracy: 0.91 },
    ZooEntry { model_id: "mnet", family: "mobilenet", build: mobilenet_v2, load_ms: None,
        runs: [(1, Delta(0.05), 3.5), (2, Delta(0.08), 3.6), (4, Delta(0.13), 3.8)], base_accuracy: 0.87 },
    ZooEntry { model_id: "r101", family: "resnet", build: r101, load_ms: None,
        runs: [(1, Delta(0.32), 16.5), (2, Delta(0.55), 17.3), (4, Delta(1.02), 17.5)], base_accuracy: 0.92 },
    ZooEntry { model_id: "r152", family: "resnet", build: r152, load_ms: Some(73.3),
        runs: [(1, Total(0.65), 24.8), (2, Total(0.98), 26.3), (4, Total(1.71), 26.7)], base_accuracy: 0.93 },
    ZooEntry { model_id: "r18", family: "resnet", build: r18, load_ms: None,
        runs: [(1, Delta(0.10), 3.0), (2, Delta(0.13), 3.2), (4, Delta(0.20), 3.4)], base_accuracy: 0.88 },
    ZooEntry { model_id: "r34", family: "resnet", build: r34, load_ms: None,
        runs: [(1, Delta(0.12), 5.0), (2, Delta(0.16), 5.3), (4, Delta(0.26), 5.6)], base_accuracy: 0.89 },
    ZooEntry { model_id: "r50", family: "resnet", build: r50, load_ms: Some(27.1),
        runs: [(1, Total(0.35), 8.4), (2, Total(0.50), 8.5), (4, Total(0.84), 8.5)], base_accuracy: 0.91 },
    ZooEntry { model_id: "squeezenet", family: "squeezenet", build: squeezenet, load_ms: None,
        runs: [(1, Delta(0.04), 1.8), (2, Delta(0.06), 1.9), (4, Delta(0.10), 2.0)], base_accuracy: 0.80 },
    ZooEntry { model_id: "ssd-mnet", family: "ssd", build: ssdlite_mobilenet_v2, load_ms: None,
        runs: [(1, Delta(0.06), 8.0), (2, Delta(0.09), 9.5), (4, Delta(0.15), 12.0)], base_accuracy: 0.84 },
    ZooEntry { model_id: "ssd-vgg", family: "ssd", build: ssd_vgg16, load_ms: Some(16.1),
        runs: [(1, Total(0.23), 16.5), (2, Total(0.33), 25.7), (4, Total(0.51), 44.6)], base_accuracy: 0.86 },
    ZooEntry { model_id: "tiny-yolo", family: "yolo", build: tiny_yolov3, load_ms: Some(6.7),
        runs: [(1, Total(0.15), 3.0), (2, Total(0.18), 5.2), (4, Total(0.24), 5.2)], base_accuracy: 0.80 },
    ZooEntry { model_id: "vgg11", family: "vgg", build: vgg11, load_ms: None,
        runs: [(1, Delta(0.15), 1.5), (2, Delta(0.26), 1.7), (4, Delta(0.48), 1.8)], base_accuracy: 0.86 },
    ZooEntry { model_id: "vgg13", family: "vgg", build: vgg13, load_ms: None,
        runs: [(1, Delta(0.19), 1.9), (2, Delta(0.33), 2.2), (4, Delta(0.60), 2.3)], base_accuracy: 0.87 },
    ZooEntry { model_id: "vgg16", family: "vgg", build: vgg16, load_ms: Some(72.2),
        runs: [(1, Total(0.74), 2.1), (2, Total(0.89), 2.4), (4, Total(1.18), 2.4)], base_accuracy: 0.88 },
    ZooEntry { model_id: "vgg19", family: "vgg", build: vgg19, load_ms: None,
        runs: [(1, Delta(0.22), 2.5), (2, Delta(0.38), 2.8), (4, Delta(0.70), 2.9)], base_accuracy: 0.88 },
    ZooEntry { model_id: "yolo", family: "yolo", build: yolov3, load_ms: Some(49.5),
        runs: [(1, Total(0.52), 17.0), (2, Total(0.73), 24.0), (4, Total(1.22), 39.9)], base_accuracy: 0.87 },
];

/// Models used by the generalization study.
pub const GENERALIZATION_MODELS: [&str; 16] = [
    "ssd-vgg", "alexnet", "yolo", "tiny-yolo", "densenet", "squeezenet", "googlenet", "r18", "r34", "r50", "r101",
    "r152", "vgg11", "vgg13", "vgg16", "vgg19",
];

impl ZooEntry {
    pub fn descriptor(&self) -> ModelDescriptor {
        let layers = (self.build)().layers;
        let params: Bytes = layers.iter().map(|l| l.param_bytes).sum();
        let load_time_ms = self
            .load_ms
            .unwrap_or_else(|| (params as f64 / LOAD_BYTES_PER_MS * 10.0).round() / 10.0);
        let run_profile = self
            .runs
            .iter()
            .map(|&(batch, mem, ms)| {
                let run_memory_bytes = match mem {
                    Total(gb) => (gb * GB).round() as Bytes,
                    Delta(gb) => params + (gb * GB).round() as Bytes,
                };
                (
                    batch,
                    RunPoint {
                        run_memory_bytes,
                        inference_time_ms: ms,
                    },
                )
            })
            .collect();
        ModelDescriptor {
            model_id: self.model_id.to_string(),
            family: self.family.to_string(),
            layers,
            load_time_ms,
            run_profile,
            base_accuracy: self.base_accuracy,
        }
    }
}

pub fn entry(model_id: &str) -> Option<&'static ZooEntry> {
    ZOO.iter().find(|e| e.model_id == model_id)
}

/// Every zoo model.
pub fn corpus() -> Catalog {
    Catalog::from_models(ZOO.iter().map(ZooEntry::descriptor).collect()).expect("zoo descriptors are valid")
}

/// The sixteen-model generalization catalog.
pub fn generalization_corpus() -> Catalog {
    let models = GENERALIZATION_MODELS
        .iter()
        .map(|id| entry(id).expect("listed model exists").descriptor())
        .collect();
    Catalog::from_models(models).expect("zoo descriptors are valid")
}
