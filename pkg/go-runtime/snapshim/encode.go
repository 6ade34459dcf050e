package snapshim

import (
	"encoding/base64"
	"encoding/json"
	"fmt"
	"math"
	"reflect"
	"sort"
	"strconv"
	"strings"
	"unsafe"
)

// Encode renders a value in the pipeline's canonical JSON form: object keys
// sorted byte-wise, no insignificant whitespace, floats in shortest
// round-trip decimal (always carrying a point or exponent), byte slices as
// standard base64. Unexported struct fields are included under their Go
// field names. Function- and channel-typed values are unsupported.
func Encode(v any) (string, error) {
	var b strings.Builder
	if err := encodeValue(&b, reflect.ValueOf(v)); err != nil {
		return "", err
	}
	return b.String(), nil
}

func encodeValue(b *strings.Builder, rv reflect.Value) error {
	if !rv.IsValid() {
		b.WriteString("null")
		return nil
	}
	if rv.Kind() == reflect.Interface || rv.Kind() == reflect.Pointer {
		if rv.IsNil() {
			b.WriteString("null")
			return nil
		}
		return encodeValue(b, rv.Elem())
	}
	if n, ok := rv.Interface().(json.Number); ok {
		return encodeNumberLiteral(b, n)
	}
	switch rv.Kind() {
	case reflect.Bool:
		if rv.Bool() {
			b.WriteString("true")
		} else {
			b.WriteString("false")
		}
	case reflect.Int, reflect.Int8, reflect.Int16, reflect.Int32, reflect.Int64:
		b.WriteString(strconv.FormatInt(rv.Int(), 10))
	case reflect.Uint, reflect.Uint8, reflect.Uint16, reflect.Uint32, reflect.Uint64:
		b.WriteString(strconv.FormatUint(rv.Uint(), 10))
	case reflect.Float32, reflect.Float64:
		s, err := FloatRepr(rv.Float())
		if err != nil {
			return err
		}
		b.WriteString(s)
	case reflect.String:
		b.WriteString(escapeString(rv.String()))
	case reflect.Slice, reflect.Array:
		if rv.Kind() == reflect.Slice && rv.Type().Elem().Kind() == reflect.Uint8 {
			if rv.IsNil() {
				b.WriteString("null")
				return nil
			}
			b.WriteString(escapeString(base64.StdEncoding.EncodeToString(rv.Bytes())))
			return nil
		}
		if rv.Kind() == reflect.Slice && rv.IsNil() {
			b.WriteString("null")
			return nil
		}
		b.WriteByte('[')
		for i := 0; i < rv.Len(); i++ {
			if i > 0 {
				b.WriteByte(',')
			}
			if err := encodeValue(b, rv.Index(i)); err != nil {
				return err
			}
		}
		b.WriteByte(']')
	case reflect.Map:
		if rv.IsNil() {
			b.WriteString("null")
			return nil
		}
		if rv.Type().Key().Kind() != reflect.String {
			return fmt.Errorf("map key type %s has no canonical form", rv.Type().Key())
		}
		keys := make([]string, 0, rv.Len())
		for _, k := range rv.MapKeys() {
			keys = append(keys, k.String())
		}
		sort.Strings(keys)
		b.WriteByte('{')
		for i, k := range keys {
			if i > 0 {
				b.WriteByte(',')
			}
			b.WriteString(escapeString(k))
			b.WriteByte(':')
			if err := encodeValue(b, rv.MapIndex(reflect.ValueOf(k))); err != nil {
				return err
			}
		}
		b.WriteByte('}')
	case reflect.Struct:
		return encodeStruct(b, rv)
	case reflect.Func, reflect.Chan:
		return fmt.Errorf("%s values have no canonical form", rv.Kind())
	default:
		return fmt.Errorf("unsupported kind %s", rv.Kind())
	}
	return nil
}

func encodeStruct(b *strings.Builder, rv reflect.Value) error {
	if !rv.CanAddr() {
		tmp := reflect.New(rv.Type()).Elem()
		tmp.Set(rv)
		rv = tmp
	}
	t := rv.Type()
	names := make([]string, 0, t.NumField())
	fields := make(map[string]reflect.Value, t.NumField())
	for i := 0; i < t.NumField(); i++ {
		f := rv.Field(i)
		if !t.Field(i).IsExported() {
			f = reflect.NewAt(f.Type(), unsafe.Pointer(f.UnsafeAddr())).Elem()
		}
		names = append(names, t.Field(i).Name)
		fields[t.Field(i).Name] = f
	}
	sort.Strings(names)
	b.WriteByte('{')
	for i, name := range names {
		if i > 0 {
			b.WriteByte(',')
		}
		b.WriteString(escapeString(name))
		b.WriteByte(':')
		if err := encodeValue(b, fields[name]); err != nil {
			return err
		}
	}
	b.WriteByte('}')
	return nil
}

func encodeNumberLiteral(b *strings.Builder, n json.Number) error {
	s := n.String()
	if !strings.ContainsAny(s, ".eE") {
		i, err := strconv.ParseInt(s, 10, 64)
		if err != nil {
			return err
		}
		b.WriteString(strconv.FormatInt(i, 10))
		return nil
	}
	f, err := strconv.ParseFloat(s, 64)
	if err != nil {
		return err
	}
	repr, err := FloatRepr(f)
	if err != nil {
		return err
	}
	b.WriteString(repr)
	return nil
}

// FloatRepr is the shortest round-trip decimal form with the same spelling
// rules the primary encoder uses: fixed notation (with a mandatory
// fractional digit) while the decimal exponent is in [-4, 16), scientific
// notation with a signed two-digit-minimum exponent otherwise.
func FloatRepr(f float64) (string, error) {
	if math.IsNaN(f) || math.IsInf(f, 0) {
		return "", fmt.Errorf("non-finite float %v has no canonical form", f)
	}
	if f == 0 {
		if math.Signbit(f) {
			return "-0.0", nil
		}
		return "0.0", nil
	}
	neg := f < 0
	if neg {
		f = -f
	}
	sci := strconv.FormatFloat(f, 'e', -1, 64)
	parts := strings.SplitN(sci, "e", 2)
	digits := strings.Replace(parts[0], ".", "", 1)
	exp, err := strconv.Atoi(parts[1])
	if err != nil {
		return "", err
	}
	var s string
	switch {
	case exp >= -4 && exp < 16:
		switch {
		case exp >= len(digits)-1:
			s = digits + strings.Repeat("0", exp-(len(digits)-1)) + ".0"
		case exp >= 0:
			s = digits[:exp+1] + "." + digits[exp+1:]
		default:
			s = "0." + strings.Repeat("0", -exp-1) + digits
		}
	default:
		mant := digits[:1]
		if len(digits) > 1 {
			mant += "." + digits[1:]
		}
		sign := "+"
		if exp < 0 {
			sign = "-"
			exp = -exp
		}
		es := strconv.Itoa(exp)
		if len(es) < 2 {
			es = "0" + es
		}
		s = mant + "e" + sign + es
	}
	if neg {
		s = "-" + s
	}
	return s, nil
}

var shortEscapes = map[rune]string{
	'"': `\"`, '\\': `\\`, '\b': `\b`, '\f': `\f`, '\n': `\n`, '\r': `\r`, '\t': `\t`,
}

func escapeString(s string) string {
	var b strings.Builder
	b.WriteByte('"')
	for _, r := range s {
		if esc, ok := shortEscapes[r]; ok {
			b.WriteString(esc)
			continue
		}
		if r < 0x20 {
			fmt.Fprintf(&b, `\u%04x`, r)
			continue
		}
		b.WriteRune(r)
	}
	b.WriteByte('"')
	return b.String()
}
