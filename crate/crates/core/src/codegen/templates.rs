//! C89 text templates. `{{name}}` placeholders are filled by [`render`];
//! `{{p}}` is always the symbol prefix.

/// Substitutes every `{{key}}` in `template`. Unknown placeholders panic:
/// templates are fixed at compile time and covered by tests.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").expect("unterminated placeholder");
        let key = &after[..end];
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("template placeholder `{key}` has no value"));
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    out
}

pub const HEADER: &str = r#"/*
 * {{file}}: feed-forward inference for network "{{name}}".
 * Generated code; do not edit.
 *
 * {{p}}_forward reads {{P}}_INPUT_LEN floats (row-major, channels-last) and
 * writes {{P}}_OUTPUT_LEN floats. Intermediate results live in static
 * buffers, so only one call may be in flight at a time.
 */
#ifndef {{P}}_H_
#define {{P}}_H_

#define {{P}}_INPUT_LEN {{input_len}}
#define {{P}}_OUTPUT_LEN {{output_len}}

#ifdef __cplusplus
extern "C" {
#endif

void {{p}}_forward(const float *input, float *output);

#ifdef __cplusplus
}
#endif

#endif /* {{P}}_H_ */
"#;

pub const PARAMS_OPEN: &str = r#"/*
 * {{file}}: trained parameters for network "{{name}}" ({{count}} values).
 * Generated code; do not edit.
 */
#ifndef {{P}}_PARAMS_H_
#define {{P}}_PARAMS_H_
"#;

pub const PARAMS_CLOSE: &str = "\n#endif /* {{P}}_PARAMS_H_ */\n";

pub const PARAM_ARRAY: &str = r#"
/* {{layer}}: {{tensor}} {{shape}} */
static const float {{symbol}}[{{len}}] = {
{{values}}
};
"#;

pub const SOURCE_OPEN: &str = r#"/*
 * {{file}}: feed-forward inference for network "{{name}}".
 * Generated code; do not edit.
 */
#include <math.h>

#include "{{header}}"
#include "{{params}}"
"#;

pub const BUFFER: &str = "static float {{symbol}}[{{len}}]; /* {{layer}} {{shape}} */\n";

pub const DENSE: &str = r#"
static void {{p}}_dense(const float *x, unsigned long in_len, const float *w,
                        const float *b, float *y, unsigned long units)
{
    unsigned long i, j;
    float acc;
    for (j = 0; j < units; ++j) {
        acc = 0.0f;
        for (i = 0; i < in_len; ++i) {
            acc += x[i] * w[i * units + j];
        }
        y[j] = acc + b[j];
    }
}
"#;

pub const DENSE_CALL: &str = "    {{p}}_dense({{x}}, {{in_len}}UL, {{w}}, {{b}}, {{y}}, {{units}}UL);\n";

pub const CONV1D: &str = r#"
static void {{p}}_conv1d(const float *x, unsigned long in_len, unsigned long channels,
                         const float *w, const float *b, unsigned long kernel,
                         unsigned long filters, unsigned long stride, unsigned long pad,
                         float *y, unsigned long out_len)
{
    unsigned long t, f, k, c, pos, row;
    float acc;
    for (t = 0; t < out_len; ++t) {
        for (f = 0; f < filters; ++f) {
            acc = 0.0f;
            for (k = 0; k < kernel; ++k) {
                pos = t * stride + k;
                if (pos < pad || pos - pad >= in_len) {
                    continue;
                }
                row = (pos - pad) * channels;
                for (c = 0; c < channels; ++c) {
                    acc += x[row + c] * w[(k * channels + c) * filters + f];
                }
            }
            y[t * filters + f] = acc + b[f];
        }
    }
}
"#;

pub const CONV1D_CALL: &str = "    {{p}}_conv1d({{x}}, {{in_len}}UL, {{channels}}UL, {{w}}, {{b}}, {{kernel}}UL, {{filters}}UL, {{stride}}UL, {{pad}}UL, {{y}}, {{out_len}}UL);\n";

pub const CONV2D: &str = r#"
/* geom: in_h, in_w, channels, kernel_h, kernel_w, filters,
 *       stride_h, stride_w, pad_top, pad_left, out_h, out_w */
static void {{p}}_conv2d(const float *x, const float *w, const float *b, float *y,
                         const unsigned long *geom)
{
    unsigned long oh, ow, f, kh, kw, c, ph, pw, row, wrow;
    float acc;
    for (oh = 0; oh < geom[10]; ++oh) {
        for (ow = 0; ow < geom[11]; ++ow) {
            for (f = 0; f < geom[5]; ++f) {
                acc = 0.0f;
                for (kh = 0; kh < geom[3]; ++kh) {
                    ph = oh * geom[6] + kh;
                    if (ph < geom[8] || ph - geom[8] >= geom[0]) {
                        continue;
                    }
                    for (kw = 0; kw < geom[4]; ++kw) {
                        pw = ow * geom[7] + kw;
                        if (pw < geom[9] || pw - geom[9] >= geom[1]) {
                            continue;
                        }
                        row = ((ph - geom[8]) * geom[1] + (pw - geom[9])) * geom[2];
                        wrow = (kh * geom[4] + kw) * geom[2];
                        for (c = 0; c < geom[2]; ++c) {
                            acc += x[row + c] * w[(wrow + c) * geom[5] + f];
                        }
                    }
                }
                y[(oh * geom[11] + ow) * geom[5] + f] = acc + b[f];
            }
        }
    }
}
"#;

pub const CONV2D_GEOM: &str = "static const unsigned long {{symbol}}[12] = { {{values}} };\n";

pub const CONV2D_CALL: &str = "    {{p}}_conv2d({{x}}, {{w}}, {{b}}, {{y}}, {{geom}});\n";

pub const MAXPOOL1D: &str = r#"
static void {{p}}_maxpool1d(const float *x, unsigned long channels, unsigned long pool,
                            unsigned long stride, float *y, unsigned long out_len)
{
    unsigned long t, c, k, start;
    float m, v;
    for (t = 0; t < out_len; ++t) {
        for (c = 0; c < channels; ++c) {
            start = t * stride;
            m = x[start * channels + c];
            for (k = 1; k < pool; ++k) {
                v = x[(start + k) * channels + c];
                if (v > m) {
                    m = v;
                }
            }
            y[t * channels + c] = m;
        }
    }
}
"#;

pub const MAXPOOL1D_CALL: &str =
    "    {{p}}_maxpool1d({{x}}, {{channels}}UL, {{pool}}UL, {{stride}}UL, {{y}}, {{out_len}}UL);\n";

pub const MAXPOOL2D: &str = r#"
/* geom: in_w, channels, pool_h, pool_w, stride_h, stride_w, out_h, out_w */
static void {{p}}_maxpool2d(const float *x, float *y, const unsigned long *geom)
{
    unsigned long oh, ow, c, ph, pw, h0, w0;
    float m, v;
    for (oh = 0; oh < geom[6]; ++oh) {
        for (ow = 0; ow < geom[7]; ++ow) {
            for (c = 0; c < geom[1]; ++c) {
                h0 = oh * geom[4];
                w0 = ow * geom[5];
                m = x[(h0 * geom[0] + w0) * geom[1] + c];
                for (ph = 0; ph < geom[2]; ++ph) {
                    for (pw = 0; pw < geom[3]; ++pw) {
                        v = x[((h0 + ph) * geom[0] + w0 + pw) * geom[1] + c];
                        if (v > m) {
                            m = v;
                        }
                    }
                }
                y[(oh * geom[7] + ow) * geom[1] + c] = m;
            }
        }
    }
}
"#;

pub const MAXPOOL2D_GEOM: &str = "static const unsigned long {{symbol}}[8] = { {{values}} };\n";

pub const MAXPOOL2D_CALL: &str = "    {{p}}_maxpool2d({{x}}, {{y}}, {{geom}});\n";

pub const COPY: &str = r#"
static void {{p}}_copy(const float *x, float *y, unsigned long len)
{
    unsigned long i;
    for (i = 0; i < len; ++i) {
        y[i] = x[i];
    }
}
"#;

pub const FLATTEN_CALL: &str = "    {{p}}_copy({{x}}, {{y}}, {{len}}UL);\n";

pub const RELU: &str = r#"
static void {{p}}_relu(float *buf, unsigned long len)
{
    unsigned long i;
    for (i = 0; i < len; ++i) {
        if (!(buf[i] > 0.0f)) {
            buf[i] = 0.0f;
        }
    }
}
"#;

pub const SIGMOID: &str = r#"
static void {{p}}_sigmoid(float *buf, unsigned long len)
{
    unsigned long i;
    for (i = 0; i < len; ++i) {
        buf[i] = (float)(1.0 / (1.0 + exp(-(double)buf[i])));
    }
}
"#;

pub const TANH: &str = r#"
static void {{p}}_tanh(float *buf, unsigned long len)
{
    unsigned long i;
    for (i = 0; i < len; ++i) {
        buf[i] = (float)tanh((double)buf[i]);
    }
}
"#;

pub const SOFTMAX: &str = r#"
static void {{p}}_softmax(float *buf, unsigned long len)
{
    unsigned long i;
    float m, sum;
    m = buf[0];
    for (i = 0; i < len; ++i) {
        if (buf[i] > m) {
            m = buf[i];
        }
    }
    sum = 0.0f;
    for (i = 0; i < len; ++i) {
        buf[i] = (float)exp((double)(buf[i] - m));
        sum += buf[i];
    }
    for (i = 0; i < len; ++i) {
        buf[i] = buf[i] / sum;
    }
}
"#;

pub const ACTIVATION_CALL: &str = "    {{p}}_{{act}}({{y}}, {{len}}UL);\n";

pub const FORWARD_OPEN: &str = r#"
void {{p}}_forward(const float *input, float *output)
{
    unsigned long i;
"#;

pub const FORWARD_CLOSE: &str = r#"    for (i = 0; i < {{P}}_OUTPUT_LEN; ++i) {
        output[i] = {{y}}[i];
    }
}
"#;

/// Host-side test driver: reads CSV rows of `INPUT_LEN` floats from stdin,
/// writes one CSV row of outputs per input row. Not part of the bundle.
pub const HOST_DRIVER: &str = r#"#include <stdio.h>
#include <stdlib.h>

#include "{{header}}"

static char line[1 << 20];

int main(void)
{
    static float in[{{P}}_INPUT_LEN];
    static float out[{{P}}_OUTPUT_LEN];
    char *p, *end;
    unsigned long i, row = 0;
    while (fgets(line, sizeof line, stdin) != NULL) {
        p = line;
        for (i = 0; i < {{P}}_INPUT_LEN; ++i) {
            in[i] = strtof(p, &end);
            if (end == p) {
                fprintf(stderr, "row %lu: expected %lu values\n", row, (unsigned long){{P}}_INPUT_LEN);
                return 1;
            }
            p = end;
            while (*p == ',' || *p == ' ') {
                ++p;
            }
        }
        {{p}}_forward(in, out);
        for (i = 0; i < {{P}}_OUTPUT_LEN; ++i) {
            printf(i ? ",%.9g" : "%.9g", (double)out[i]);
        }
        printf("\n");
        ++row;
    }
    return 0;
}
"#;
