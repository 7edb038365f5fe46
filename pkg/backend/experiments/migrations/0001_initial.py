import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='Sweep',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('parameter', models.CharField(max_length=50)),
                ('values', models.JSONField(default=list)),
                ('schemes', models.JSONField(default=list)),
                ('seeds', models.PositiveIntegerField(default=1)),
                ('scenario_hash', models.CharField(max_length=32)),
                ('out_dir', models.CharField(max_length=500)),
                ('tool_version', models.CharField(max_length=20)),
                ('status', models.CharField(choices=[('RUNNING', 'Running'), ('DONE', 'Done'), ('FAILED', 'Failed')], default='RUNNING', max_length=20)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'db_table': 'sweeps',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario_hash', models.CharField(max_length=32)),
                ('scheme', models.CharField(choices=[('CORSMA', 'Coordinated RSMA-ISAC'), ('SDMA', 'SDMA-ISAC'), ('NOMA', 'NOMA-ISAC'), ('OMA', 'OMA-ISAC')], default='CORSMA', max_length=10)),
                ('seed', models.IntegerField(default=0)),
                ('parameter', models.CharField(blank=True, max_length=50)),
                ('value', models.FloatField(blank=True, null=True)),
                ('status', models.CharField(choices=[('converged', 'Converged'), ('max_iter', 'Iteration limit'), ('infeasible', 'Infeasible'), ('error', 'Error')], max_length=20)),
                ('wsr', models.FloatField(blank=True, help_text='Weighted sum rate, b/s', null=True)),
                ('common_ratio', models.FloatField(blank=True, help_text='Weighted common rate over WSR', null=True)),
                ('sensing_snr', models.FloatField(blank=True, null=True)),
                ('iterations', models.IntegerField(default=0)),
                ('runtime', models.FloatField(default=0.0, help_text='Wall-clock seconds')),
                ('options', models.JSONField(default=dict)),
                ('result_path', models.CharField(blank=True, max_length=500)),
                ('error', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('sweep', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='runs', to='experiments.sweep')),
            ],
            options={
                'db_table': 'experiment_runs',
                'ordering': ['created_at'],
                'indexes': [models.Index(fields=['scheme', 'parameter'], name='experiment__scheme_7c1f0a_idx')],
            },
        ),
    ]
